#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "maxent/common.hpp"
#include "maxent/measurement.hpp"
#include "maxent/problem.hpp"
#include "maxent/support.hpp"

namespace maxent {

struct ExponentTerm {
  double lambda;
  MeasurementFunction phi;
};

struct IntegrationOptions {
  size_t budget = 200000;
  double target_rel_tol = 1e-9;
  uint64_t seed = 0;
};

struct IntegrationRequest {
  SupportSet support;
  std::vector<ExponentTerm> exponent_terms;
  std::optional<MeasurementFunction> weight;
  size_t budget = 200000;
  double target_rel_tol = 1e-9;
  uint64_t seed = 0;
};

enum class QuadratureStatus { Converged, BudgetExhausted };

struct QuadratureResult {
  double value = 0.0;
  double abs_error_estimate = 0.0;
  size_t evaluations_used = 0;
  std::string method;
  double truncation_radius = 0.0;
  QuadratureStatus status = QuadratureStatus::Converged;
  // value = sign * exp(log_abs_value); kept alongside for extreme scales.
  double log_abs_value = -kInf;
  int sign = 0;
};

// One pass over a shared point set: log of Z = int exp(-sum lambda*phi) and
// the moments E[w_k] under the density exp(-sum lambda*phi)/Z. Moments are
// ratio estimates from the same points, so their errors are correlated and
// mostly cancel.
struct BatchResult {
  double log_z = -kInf;
  double log_z_err = 0.0;
  std::vector<double> moments;
  std::vector<double> moment_errors;
  size_t evaluations = 0;
  std::string method;
  double truncation_radius = 0.0;
  bool tolerance_met = true;
};

namespace detail {

// Kronrod 15 / Gauss 7 pair on [-1,1], positive-half tables.
inline constexpr double kGkNodes[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144838258730, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0};
inline constexpr double kGkWeights[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr double kGaussWeights[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct NodeTable {
  double node[15];
  double wk[15];
  double wg[15];  // zero at Kronrod-only positions
};

inline const NodeTable& node_table() {
  static const NodeTable t = [] {
    NodeTable n{};
    for (int j = 0; j < 15; ++j) {
      const int h = std::min(j, 14 - j);
      n.node[j] = (j < 7) ? -kGkNodes[h] : kGkNodes[h];
      n.wk[j] = kGkWeights[h];
      n.wg[j] = (h % 2 == 1 || h == 7) ? kGaussWeights[h / 2] : 0.0;
    }
    return n;
  }();
  return t;
}

struct Integrand {
  const SupportSet* support;
  std::span<const ExponentTerm> terms;
  bool check_membership;  // true when half-spaces cut the box

  double energy(std::span<const double> x) const {
    if (check_membership && !support->contains(x)) return kInf;
    double e = 0.0;
    for (const auto& t : terms)
      if (t.lambda != 0.0) e += t.lambda * t.phi.value(x);
    if (std::isnan(e))
      throw DeclarationError("measurement returned NaN inside the support");
    if (e == -kInf)
      throw DivergentIntegralError(
          "exponent reached -inf; the integrand has a non-integrable singularity");
    return e;
  }
};

// Integrals over one box are accumulated as exp(e_ref - E(x)), so every value
// lives in [0, e^600]; e_ref tracks the lowest energy seen and the region is
// redone if a refinement finds energy more than 600 below it.
struct Cell {
  std::vector<double> lo, hi;
  double zk = 0.0, zg = 0.0;
  std::vector<double> wk, wg;
  double err = 0.0;
  uint64_t id = 0;  // deterministic heap tiebreak
};

struct CellOrder {
  bool operator()(const Cell& a, const Cell& b) const {
    if (a.err != b.err) return a.err < b.err;
    return a.id > b.id;
  }
};

struct RegionResult {
  double e_ref = 0.0;
  double z = 0.0;
  double z_err = 0.0;
  std::vector<double> w, w_err;
  bool tolerance_met = true;
};

struct CellEvalStatus {
  double min_energy = kInf;
  bool overflow = false;
};

inline CellEvalStatus evaluate_cell(const Integrand& f,
                                    std::span<const MeasurementFunction> weights,
                                    double e_ref, Cell& cell, size_t& evals) {
  const auto& t = node_table();
  const size_t d = cell.lo.size();
  const size_t nw = weights.size();
  cell.zk = cell.zg = 0.0;
  cell.wk.assign(nw, 0.0);
  cell.wg.assign(nw, 0.0);
  CellEvalStatus status;

  std::vector<double> mid(d), half(d), x(d);
  double volume_scale = 1.0;
  for (size_t i = 0; i < d; ++i) {
    mid[i] = 0.5 * (cell.lo[i] + cell.hi[i]);
    half[i] = 0.5 * (cell.hi[i] - cell.lo[i]);
    volume_scale *= half[i];
  }

  std::vector<int> idx(d, 0);
  while (true) {
    double pk = 1.0, pg = 1.0;
    for (size_t i = 0; i < d; ++i) {
      x[i] = mid[i] + half[i] * t.node[idx[i]];
      pk *= t.wk[idx[i]];
      pg *= t.wg[idx[i]];
    }
    const double e = f.energy(x);
    ++evals;
    if (e < status.min_energy) status.min_energy = e;
    if (e_ref - e > 600.0) {
      status.overflow = true;
      return status;
    }
    if (e != kInf) {
      const double g = std::exp(e_ref - e);
      cell.zk += pk * g;
      cell.zg += pg * g;
      if (g > 0.0) {
        for (size_t k = 0; k < nw; ++k) {
          const double v = weights[k].value(x) * g;
          cell.wk[k] += pk * v;
          cell.wg[k] += pg * v;
        }
      }
    }
    size_t axis = 0;
    while (axis < d && ++idx[axis] == 15) {
      idx[axis] = 0;
      ++axis;
    }
    if (axis == d) break;
  }

  cell.zk *= volume_scale;
  cell.zg *= volume_scale;
  cell.err = std::abs(cell.zk - cell.zg);
  for (size_t k = 0; k < nw; ++k) {
    cell.wk[k] *= volume_scale;
    cell.wg[k] *= volume_scale;
    cell.err += std::abs(cell.wk[k] - cell.wg[k]);
  }
  return status;
}

// Axis-aligned segments of [lo, hi] cut at the listed interior points, each
// then split "splits" more times to give the probe/refinement a head start.
inline std::vector<std::pair<double, double>> axis_segments(
    double lo, double hi, std::span<const double> cuts, int splits) {
  std::vector<double> edges{lo};
  for (double c : cuts)
    if (c > lo && c < hi) edges.push_back(c);
  edges.push_back(hi);
  std::sort(edges.begin(), edges.end());
  std::vector<std::pair<double, double>> segs;
  for (size_t i = 0; i + 1 < edges.size(); ++i) {
    const double a = edges[i], b = edges[i + 1];
    const int parts = 1 << splits;
    for (int p = 0; p < parts; ++p)
      segs.emplace_back(a + (b - a) * p / parts, a + (b - a) * (p + 1) / parts);
  }
  return segs;
}

inline RegionResult integrate_region(
    const Integrand& f, std::span<const MeasurementFunction> weights,
    std::span<const double> lo, std::span<const double> hi,
    const std::vector<std::vector<double>>& axis_cuts, double rel_tol,
    double abs_floor_log, size_t budget, size_t& evals, uint64_t& next_cell_id) {
  const size_t d = lo.size();
  const size_t nw = weights.size();
  const int splits = d == 1 ? 2 : (d == 2 ? 1 : 0);

  std::vector<std::vector<std::pair<double, double>>> segments(d);
  for (size_t i = 0; i < d; ++i)
    segments[i] = axis_segments(lo[i], hi[i], axis_cuts[i], splits);

  // Probe cell centers for the reference energy before any g is formed.
  std::vector<Cell> initial;
  {
    std::vector<size_t> idx(d, 0);
    while (true) {
      Cell c;
      c.lo.resize(d);
      c.hi.resize(d);
      for (size_t i = 0; i < d; ++i) {
        c.lo[i] = segments[i][idx[i]].first;
        c.hi[i] = segments[i][idx[i]].second;
      }
      c.id = next_cell_id++;
      initial.push_back(std::move(c));
      size_t axis = 0;
      while (axis < d && ++idx[axis] == segments[axis].size()) {
        idx[axis] = 0;
        ++axis;
      }
      if (axis == d) break;
    }
  }
  double e_ref = kInf;
  {
    std::vector<double> x(d);
    for (const auto& c : initial) {
      for (size_t i = 0; i < d; ++i) x[i] = 0.5 * (c.lo[i] + c.hi[i]);
      e_ref = std::min(e_ref, f.energy(x));
      ++evals;
    }
    if (e_ref == kInf) e_ref = 0.0;  // region entirely outside the support
  }

  RegionResult out;
  for (int attempt = 0; attempt < 12; ++attempt) {
    std::vector<Cell> heap;
    heap.reserve(initial.size());
    double min_seen = e_ref;
    bool redo = false;
    for (const auto& proto : initial) {
      Cell c = proto;
      const auto st = evaluate_cell(f, weights, e_ref, c, evals);
      min_seen = std::min(min_seen, st.min_energy);
      if (st.overflow) {
        redo = true;
        break;
      }
      heap.push_back(std::move(c));
    }
    if (redo) {
      e_ref = min_seen;
      continue;
    }
    std::make_heap(heap.begin(), heap.end(), CellOrder{});

    // Running totals kept incrementally; recomputed once at the end so
    // subtraction drift never reaches the returned values.
    double z = 0.0, zerr = 0.0;
    std::vector<double> w(nw, 0.0), werr(nw, 0.0);
    auto account = [&](const Cell& c, double sgn) {
      z += sgn * c.zk;
      zerr += sgn * std::abs(c.zk - c.zg);
      for (size_t k = 0; k < nw; ++k) {
        w[k] += sgn * c.wk[k];
        werr[k] += sgn * std::abs(c.wk[k] - c.wg[k]);
      }
    };
    for (const auto& c : heap) account(c, 1.0);

    const double abs_floor = std::exp(std::min(600.0, abs_floor_log + e_ref));
    auto done = [&] {
      if (zerr > std::max(rel_tol * std::abs(z), abs_floor)) return false;
      for (size_t k = 0; k < nw; ++k)
        if (werr[k] >
            std::max(rel_tol * (std::abs(w[k]) + std::abs(z)), abs_floor))
          return false;
      return true;
    };

    while (!done() && evals < budget && !heap.empty() &&
           heap.front().err > 0.0) {
      std::pop_heap(heap.begin(), heap.end(), CellOrder{});
      Cell parent = std::move(heap.back());
      heap.pop_back();
      size_t axis = 0;
      double width = 0.0;
      for (size_t i = 0; i < d; ++i)
        if (parent.hi[i] - parent.lo[i] > width) {
          width = parent.hi[i] - parent.lo[i];
          axis = i;
        }
      const double mid = 0.5 * (parent.lo[axis] + parent.hi[axis]);
      if (width < 1e-10 * (1.0 + std::abs(mid))) {
        // Unsplittable kink or jump: keep its contribution but retire it
        // from refinement by zeroing the priority.
        parent.err = 0.0;
        heap.push_back(std::move(parent));
        std::push_heap(heap.begin(), heap.end(), CellOrder{});
        continue;
      }
      account(parent, -1.0);
      for (int side = 0; side < 2; ++side) {
        Cell child;
        child.lo = parent.lo;
        child.hi = parent.hi;
        (side == 0 ? child.hi[axis] : child.lo[axis]) = mid;
        child.id = next_cell_id++;
        const auto st = evaluate_cell(f, weights, e_ref, child, evals);
        min_seen = std::min(min_seen, st.min_energy);
        if (st.overflow) {
          redo = true;
          break;
        }
        account(child, 1.0);
        heap.push_back(std::move(child));
        std::push_heap(heap.begin(), heap.end(), CellOrder{});
      }
      if (redo) break;
    }
    if (redo) {
      e_ref = min_seen;
      continue;
    }

    z = zerr = 0.0;
    w.assign(nw, 0.0);
    werr.assign(nw, 0.0);
    for (const auto& c : heap) account(c, 1.0);
    out.e_ref = e_ref;
    out.z = z;
    out.z_err = zerr;
    out.tolerance_met = done();
    out.w = std::move(w);
    out.w_err = std::move(werr);
    return out;
  }
  throw DivergentIntegralError(
      "integration region kept uncovering lower energies; exponent appears "
      "unbounded below");
}

inline double log_add(double a, double b) {
  if (a == -kInf) return b;
  if (b == -kInf) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

struct ClippedBox {
  std::vector<double> lo, hi;
};

inline ClippedBox clip_box(const SupportSet& s, std::span<const double> center,
                           double r) {
  const int d = s.dimension();
  ClippedBox b;
  b.lo.resize(static_cast<size_t>(d));
  b.hi.resize(static_cast<size_t>(d));
  for (int i = 0; i < d; ++i) {
    b.lo[static_cast<size_t>(i)] =
        std::max(s.lower()[static_cast<size_t>(i)], center[static_cast<size_t>(i)] - r);
    b.hi[static_cast<size_t>(i)] =
        std::min(s.upper()[static_cast<size_t>(i)], center[static_cast<size_t>(i)] + r);
  }
  return b;
}

// Disjoint slabs covering outer \ inner, classifying points by the first axis
// on which they leave the inner box.
inline std::vector<ClippedBox> peel_shell(const ClippedBox& inner,
                                          const ClippedBox& outer) {
  const size_t d = inner.lo.size();
  std::vector<ClippedBox> slabs;
  for (size_t i = 0; i < d; ++i) {
    for (int side = 0; side < 2; ++side) {
      const double a = side == 0 ? outer.lo[i] : inner.hi[i];
      const double b = side == 0 ? inner.lo[i] : outer.hi[i];
      if (!(b > a)) continue;
      ClippedBox s;
      s.lo.resize(d);
      s.hi.resize(d);
      for (size_t j = 0; j < d; ++j) {
        if (j < i) {
          s.lo[j] = inner.lo[j];
          s.hi[j] = inner.hi[j];
        } else {
          s.lo[j] = outer.lo[j];
          s.hi[j] = outer.hi[j];
        }
      }
      s.lo[i] = a;
      s.hi[i] = b;
      slabs.push_back(std::move(s));
    }
  }
  return slabs;
}

inline double initial_radius(std::span<const ExponentTerm> terms) {
  double lambda_min = kInf;
  double c_min = kInf;
  for (const auto& t : terms) {
    if (t.lambda <= 0.0 || !t.phi.attributes().is_coercive) continue;
    lambda_min = std::min(lambda_min, t.lambda);
    c_min = std::min(c_min, std::max(t.phi.attributes().growth_coefficient, 1e-12));
  }
  if (!std::isfinite(lambda_min)) return 16.0;
  return std::clamp(8.0 / std::sqrt(lambda_min * c_min), 2.0, 1e6);
}

inline std::vector<std::vector<double>> collect_axis_cuts(
    int d, std::span<const ExponentTerm> terms,
    std::span<const MeasurementFunction> weights) {
  std::vector<std::vector<double>> cuts(static_cast<size_t>(d));
  if (d != 1) return cuts;
  auto add = [&](const MeasurementFunction& phi) {
    for (double b : phi.breakpoints_1d()) cuts[0].push_back(b);
  };
  for (const auto& t : terms)
    if (t.lambda != 0.0) add(t.phi);
  for (const auto& w : weights) add(w);
  std::sort(cuts[0].begin(), cuts[0].end());
  cuts[0].erase(std::unique(cuts[0].begin(), cuts[0].end()), cuts[0].end());
  return cuts;
}

inline BatchResult combine_regions(const std::vector<RegionResult>& regions,
                                   size_t nw, double tail_residual_log) {
  BatchResult out;
  double global_ref = kInf;
  double log_z = -kInf;
  for (const auto& r : regions) {
    if (r.z > 0.0) {
      global_ref = std::min(global_ref, r.e_ref);
      log_z = log_add(log_z, -r.e_ref + std::log(r.z));
    }
    out.tolerance_met = out.tolerance_met && r.tolerance_met;
  }
  if (log_z == -kInf)
    throw DivergentIntegralError("integral vanished on the entire domain");
  if (global_ref == kInf) global_ref = 0.0;

  double z_s = 0.0, z_err_s = 0.0;
  std::vector<double> w_s(nw, 0.0), w_err_s(nw, 0.0);
  for (const auto& r : regions) {
    const double scale = std::exp(std::min(0.0, global_ref - r.e_ref));
    z_s += scale * r.z;
    z_err_s += scale * r.z_err;
    for (size_t k = 0; k < nw; ++k) {
      w_s[k] += scale * r.w[k];
      w_err_s[k] += scale * r.w_err[k];
    }
  }
  if (tail_residual_log > -kInf) {
    const double resid = std::exp(std::min(600.0, tail_residual_log + global_ref));
    z_err_s += resid;
    for (size_t k = 0; k < nw; ++k) w_err_s[k] += resid;
  }

  out.log_z = log_z;
  out.log_z_err = z_s > 0.0 ? z_err_s / z_s : kInf;
  out.moments.resize(nw);
  out.moment_errors.resize(nw);
  for (size_t k = 0; k < nw; ++k) {
    out.moments[k] = w_s[k] / z_s;
    out.moment_errors[k] =
        (w_err_s[k] + std::abs(out.moments[k]) * z_err_s) / z_s;
  }
  return out;
}

inline BatchResult batch_adaptive(const SupportSet& support,
                                  std::span<const ExponentTerm> terms,
                                  std::span<const MeasurementFunction> weights,
                                  const IntegrationOptions& opts) {
  const int d = support.dimension();
  const Integrand f{&support, terms, !support.halfspaces().empty()};
  const auto cuts = collect_axis_cuts(d, terms, weights);

  std::vector<double> center(static_cast<size_t>(d));
  for (int i = 0; i < d; ++i)
    center[static_cast<size_t>(i)] = std::clamp(
        0.0, support.lower()[static_cast<size_t>(i)], support.upper()[static_cast<size_t>(i)]);

  size_t evals = 0;
  uint64_t next_cell_id = 0;
  std::vector<RegionResult> regions;
  double r = initial_radius(terms);
  ClippedBox box = clip_box(support, center, r);
  double running_log_z = -kInf;

  auto run_region = [&](const ClippedBox& b) {
    // Negligible-contribution floor: 1e-12 of the running total.
    const double floor_log = running_log_z == -kInf
                                 ? -kInf
                                 : running_log_z + std::log(1e-12);
    RegionResult rr =
        integrate_region(f, weights, b.lo, b.hi, cuts, opts.target_rel_tol,
                         floor_log, opts.budget, evals, next_cell_id);
    if (rr.z > 0.0)
      running_log_z = log_add(running_log_z, -rr.e_ref + std::log(rr.z));
    regions.push_back(std::move(rr));
    return regions.back().z > 0.0
               ? -regions.back().e_ref + std::log(regions.back().z)
               : -kInf;
  };

  run_region(box);

  bool budget_out = evals >= opts.budget;
  double tail_residual_log = -kInf;
  bool tail_converged = false;
  // Divergence is judged on each shell's fraction of the running total:
  // a convergent tail's fraction falls monotonically once past the decay
  // scale, while width doubling keeps a divergent (or merely non-decaying)
  // tail's fraction from ever decreasing. Raw shell mass would misfire at
  // small multipliers, where mass grows for many doublings before the decay
  // scale 1/lambda is reached.
  double prev_fraction_log = kInf;
  double prev_shell_log = -kInf;
  int nondecreasing = 0;

  for (int doubling = 0; doubling < 60; ++doubling) {
    bool covered = true;
    for (size_t i = 0; i < box.lo.size(); ++i)
      if (box.lo[i] > support.lower()[i] || box.hi[i] < support.upper()[i])
        covered = false;
    if (covered) {
      tail_residual_log = -kInf;
      tail_converged = true;
      break;
    }
    const ClippedBox outer = clip_box(support, center, 2.0 * r);
    bool unbounded_axis = false;
    for (size_t i = 0; i < box.lo.size(); ++i)
      if (!std::isfinite(support.lower()[i]) || !std::isfinite(support.upper()[i]))
        unbounded_axis = true;

    const double total_before = running_log_z;
    double shell_log = -kInf;
    for (const auto& slab : peel_shell(box, outer))
      shell_log = log_add(shell_log, run_region(slab));
    if (!std::isfinite(shell_log) && shell_log > 0.0)
      throw DivergentIntegralError("shell contribution overflowed");

    // A shell can only be dismissed as a converged tail if it is both
    // negligible and shrinking: a plateau's shells are tiny after heavy
    // suppression yet double in mass with every doubling of the radius,
    // and accepting the first one would certify a divergent integral.
    const bool shrinking = shell_log == -kInf || shell_log < prev_shell_log;
    if (shell_log <= running_log_z + std::log(1e-9) && shrinking) {
      tail_residual_log = shell_log;
      tail_converged = true;
      box = outer;
      break;
    }
    if (unbounded_axis) {
      const double fraction_log = shell_log - total_before;
      if (fraction_log >= prev_fraction_log - 1e-12)
        ++nondecreasing;
      else
        nondecreasing = 0;
      if (nondecreasing >= 4)
        throw DivergentIntegralError(
            "tail mass did not decrease across four truncation doublings; "
            "the integral appears divergent");
      prev_fraction_log = fraction_log;
    }
    prev_shell_log = shell_log;
    box = outer;
    r *= 2.0;
    if (evals >= opts.budget) {
      tail_residual_log = shell_log;
      budget_out = true;
      break;
    }
  }

  BatchResult out = combine_regions(regions, weights.size(), tail_residual_log);
  out.evaluations = evals;
  out.method = d == 1 ? "adaptive-1d" : "tensor-product";
  double radius = 0.0;
  for (size_t i = 0; i < box.lo.size(); ++i)
    radius = std::max({radius, std::abs(box.lo[i]), std::abs(box.hi[i])});
  out.truncation_radius = radius;
  if (budget_out || !tail_converged) out.tolerance_met = false;
  return out;
}

// Downhill simplex on the energy; +inf outside the support keeps the walk
// inside. Deterministic: fixed coefficients, no restarts.
inline std::vector<double> nelder_mead_min(
    const std::function<double(std::span<const double>)>& f,
    std::vector<double> start, double scale, size_t max_evals, size_t& evals) {
  const size_t d = start.size();
  struct Vertex {
    std::vector<double> x;
    double v;
  };
  std::vector<Vertex> simplex;
  auto eval = [&](const std::vector<double>& x) {
    ++evals;
    return f(x);
  };
  simplex.push_back({start, eval(start)});
  for (size_t i = 0; i < d; ++i) {
    auto x = start;
    x[i] += scale * (1.0 + std::abs(x[i]));
    simplex.push_back({x, eval(x)});
  }
  auto by_value = [](const Vertex& a, const Vertex& b) { return a.v < b.v; };
  size_t used = d + 1;
  while (used < max_evals) {
    std::sort(simplex.begin(), simplex.end(), by_value);
    const double spread = std::abs(simplex.back().v - simplex.front().v);
    if (spread < 1e-12 * (1.0 + std::abs(simplex.front().v))) break;
    std::vector<double> centroid(d, 0.0);
    for (size_t i = 0; i < d; ++i) {
      for (size_t j = 0; j < d; ++j) centroid[j] += simplex[i].x[j];
    }
    for (double& c : centroid) c /= static_cast<double>(d);
    auto blend = [&](double t) {
      std::vector<double> x(d);
      for (size_t j = 0; j < d; ++j)
        x[j] = centroid[j] + t * (simplex.back().x[j] - centroid[j]);
      return x;
    };
    auto xr = blend(-1.0);
    double vr = eval(xr);
    ++used;
    if (vr < simplex.front().v) {
      auto xe = blend(-2.0);
      double ve = eval(xe);
      ++used;
      simplex.back() = ve < vr ? Vertex{xe, ve} : Vertex{xr, vr};
    } else if (vr < simplex[d - 1].v) {
      simplex.back() = {xr, vr};
    } else {
      auto xc = blend(0.5);
      double vc = eval(xc);
      ++used;
      if (vc < simplex.back().v) {
        simplex.back() = {xc, vc};
      } else {
        for (size_t i = 1; i <= d; ++i) {
          for (size_t j = 0; j < d; ++j)
            simplex[i].x[j] =
                0.5 * (simplex[i].x[j] + simplex.front().x[j]);
          simplex[i].v = eval(simplex[i].x);
          ++used;
        }
      }
    }
  }
  std::sort(simplex.begin(), simplex.end(), by_value);
  return simplex.front().x;
}

inline BatchResult batch_monte_carlo(const SupportSet& support,
                                     std::span<const ExponentTerm> terms,
                                     std::span<const MeasurementFunction> weights,
                                     const IntegrationOptions& opts) {
  const size_t d = static_cast<size_t>(support.dimension());
  const size_t nw = weights.size();
  const Integrand f{&support, terms, !support.halfspaces().empty()};
  size_t evals = 0;

  std::vector<double> center(d);
  for (size_t i = 0; i < d; ++i)
    center[i] = std::clamp(0.0, support.lower()[i], support.upper()[i]);
  const double r0 = initial_radius(terms);
  const ClippedBox probe_box = clip_box(support, center, r0);

  // Mode search: best of a low-discrepancy sweep, polished by simplex.
  std::vector<double> best = center;
  double best_e = f.energy(best);
  ++evals;
  std::vector<double> x(d);
  for (uint64_t k = 1; k <= 512; ++k) {
    halton_point(k, x);
    for (size_t i = 0; i < d; ++i)
      x[i] = probe_box.lo[i] + x[i] * (probe_box.hi[i] - probe_box.lo[i]);
    const double e = f.energy(x);
    ++evals;
    if (e < best_e) {
      best_e = e;
      best = x;
    }
  }
  const size_t nm_budget = std::min<size_t>(opts.budget / 4, 4000);
  auto energy_fn = [&](std::span<const double> p) {
    for (double v : p)
      if (!std::isfinite(v)) return kInf;
    return f.energy(p);
  };
  std::vector<double> mode =
      nelder_mead_min(energy_fn, best, 0.05, nm_budget, evals);
  const double mode_e = f.energy(mode);
  ++evals;
  double mode_norm = 0.0;
  for (double v : mode) mode_norm += v * v;
  if (mode_e < -1e8 || mode_norm > 1e14)
    throw DivergentIntegralError(
        "exponent minimizer ran away; the partition integral appears divergent");

  // Laplace-matched diagonal proposal: sigma from a finite-difference
  // Hessian, curvature floored at 1e-6.
  std::vector<double> sigma(d);
  for (size_t i = 0; i < d; ++i) {
    const double h = 1e-3 * (1.0 + std::abs(mode[i]));
    auto xp = mode;
    auto xm = mode;
    xp[i] += h;
    xm[i] -= h;
    const double ep = f.energy(xp), em = f.energy(xm);
    evals += 2;
    double curv = (ep - 2.0 * mode_e + em) / (h * h);
    if (!std::isfinite(curv) || curv < 1e-6) curv = 1e-6;
    sigma[i] = 1.0 / std::sqrt(curv);
  }

  // Fixed sample count from the budget alone, so one seed yields one stream
  // regardless of how much the mode search consumed.
  const size_t n = std::max<size_t>(1000, opts.budget - opts.budget / 4);
  Rng rng(derive_seed(opts.seed, 0x5a3f));
  std::vector<double> t(n, -kInf);
  std::vector<double> wv(n * nw, 0.0);
  const double half_log_2pi = 0.91893853320467274178;
  for (size_t s = 0; s < n; ++s) {
    double log_q = 0.0;
    bool ok = true;
    for (size_t i = 0; i < d; ++i) {
      const double z = rng.next_normal();
      x[i] = mode[i] + sigma[i] * z;
      log_q += -std::log(sigma[i]) - half_log_2pi - 0.5 * z * z;
      if (!std::isfinite(x[i])) ok = false;
    }
    ++evals;
    if (!ok || !support.contains(x)) continue;
    const double e = f.energy(x);
    if (e == kInf) continue;
    t[s] = -e - log_q;
    for (size_t k = 0; k < nw; ++k) wv[s * nw + k] = weights[k].value(x);
  }

  double m = -kInf;
  for (double v : t) m = std::max(m, v);
  if (m == -kInf)
    throw DivergentIntegralError("no sample landed in the support");
  double sum_f = 0.0, sum_f2 = 0.0;
  std::vector<double> sum_g(nw, 0.0);
  for (size_t s = 0; s < n; ++s) {
    const double fs = t[s] == -kInf ? 0.0 : std::exp(t[s] - m);
    sum_f += fs;
    sum_f2 += fs * fs;
    for (size_t k = 0; k < nw; ++k) sum_g[k] += wv[s * nw + k] * fs;
  }
  const double mean_f = sum_f / static_cast<double>(n);
  const double var_f =
      std::max(0.0, sum_f2 / static_cast<double>(n) - mean_f * mean_f);
  const double se_f = std::sqrt(var_f / static_cast<double>(n));

  BatchResult out;
  out.log_z = m + std::log(mean_f);
  out.log_z_err = se_f / mean_f;
  out.moments.resize(nw);
  out.moment_errors.resize(nw);
  for (size_t k = 0; k < nw; ++k) {
    const double ratio = sum_g[k] / sum_f;
    double ss = 0.0;
    for (size_t s = 0; s < n; ++s) {
      const double fs = t[s] == -kInf ? 0.0 : std::exp(t[s] - m);
      const double dev = wv[s * nw + k] * fs - ratio * fs;
      ss += dev * dev;
    }
    out.moments[k] = ratio;
    out.moment_errors[k] =
        std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n)) /
        mean_f;
  }
  out.evaluations = evals;
  out.method = "monte-carlo";
  out.truncation_radius = 0.0;  // proposal is untruncated
  out.tolerance_met = out.log_z_err <= opts.target_rel_tol;
  return out;
}

}  // namespace detail

inline BatchResult batch_integrate(const SupportSet& support,
                                   std::span<const ExponentTerm> terms,
                                   std::span<const MeasurementFunction> weights,
                                   const IntegrationOptions& opts) {
  if (opts.budget < 1000)
    throw std::invalid_argument("integration budget must be at least 1000");
  if (!(opts.target_rel_tol > 0.0))
    throw std::invalid_argument("target_rel_tol must be positive");
  bool any_positive = false;
  for (const auto& t : terms) {
    if (!std::isfinite(t.lambda) || t.lambda < 0.0)
      throw std::invalid_argument("exponent multipliers must be finite and >= 0");
    if (t.phi.dimension() != support.dimension())
      throw std::invalid_argument("exponent term dimension mismatch");
    if (t.lambda > 0.0) any_positive = true;
  }
  for (const auto& w : weights)
    if (w.dimension() != support.dimension())
      throw std::invalid_argument("weight dimension mismatch");
  if (!any_positive && !support.finite_volume())
    throw DivergentIntegralError(
        "zero exponent over an infinite-volume support has no finite integral");

  if (support.dimension() <= 3)
    return detail::batch_adaptive(support, terms, weights, opts);
  return detail::batch_monte_carlo(support, terms, weights, opts);
}

inline QuadratureResult integrate(const IntegrationRequest& req) {
  std::vector<MeasurementFunction> weights;
  if (req.weight) weights.push_back(*req.weight);
  IntegrationOptions opts{req.budget, req.target_rel_tol, req.seed};
  const BatchResult br =
      batch_integrate(req.support, req.exponent_terms, weights, opts);

  QuadratureResult out;
  out.evaluations_used = br.evaluations;
  out.method = br.method;
  out.truncation_radius = br.truncation_radius;
  out.status = br.tolerance_met ? QuadratureStatus::Converged
                                : QuadratureStatus::BudgetExhausted;
  const double z = std::exp(std::min(700.0, br.log_z));
  if (req.weight) {
    const double moment = br.moments[0];
    out.sign = moment > 0.0 ? 1 : (moment < 0.0 ? -1 : 0);
    out.log_abs_value =
        moment == 0.0 ? -kInf : std::log(std::abs(moment)) + br.log_z;
    out.value = moment * z;
    out.abs_error_estimate =
        z * (br.moment_errors[0] + std::abs(moment) * br.log_z_err);
  } else {
    out.sign = 1;
    out.log_abs_value = br.log_z;
    out.value = z;
    out.abs_error_estimate = z * br.log_z_err;
  }
  return out;
}

inline std::vector<ExponentTerm> exponent_terms_for(
    const MomentProblem& problem, std::span<const double> lambda) {
  if (lambda.size() != problem.size())
    throw std::invalid_argument("multiplier count does not match constraints");
  std::vector<ExponentTerm> terms;
  terms.reserve(lambda.size());
  for (size_t g = 0; g < lambda.size(); ++g)
    terms.push_back({lambda[g], problem.constraints()[g].phi});
  return terms;
}

// alpha(lambda) = ln int_S exp(-sum lambda_g phi_g), with its error estimate.
inline std::pair<double, double> log_partition(const MomentProblem& problem,
                                               std::span<const double> lambda,
                                               const IntegrationOptions& opts) {
  const auto terms = exponent_terms_for(problem, lambda);
  const BatchResult br = batch_integrate(problem.support(), terms, {}, opts);
  return {br.log_z, br.log_z_err};
}

// E[phi_g] for every constraint under the density exp(-sum lambda*phi)/Z.
inline std::vector<double> moments_under(const MomentProblem& problem,
                                         std::span<const double> lambda,
                                         const IntegrationOptions& opts) {
  const auto terms = exponent_terms_for(problem, lambda);
  std::vector<MeasurementFunction> weights;
  weights.reserve(problem.size());
  for (const auto& c : problem.constraints()) weights.push_back(c.phi);
  return batch_integrate(problem.support(), terms, weights, opts).moments;
}

}  // namespace maxent
