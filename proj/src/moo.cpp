#include "koopmoo/moo.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

#include "koopmoo/diagnostics.hpp"
#include "koopmoo/errors.hpp"
#include "koopmoo/io.hpp"
#include "koopmoo/rng.hpp"

namespace koopmoo {

bool dominates(const Vector& fa, const Vector& fb) {
  if (fa.size() != fb.size()) throw ConfigurationError("objective vectors differ in length");
  const bool a_finite = fa.allFinite();
  const bool b_finite = fb.allFinite();
  if (a_finite && !b_finite) return true;
  if (!a_finite && b_finite) return false;
  bool strict = false;
  for (Eigen::Index i = 0; i < fa.size(); ++i) {
    if (fa(i) > fb(i)) return false;
    if (fa(i) < fb(i)) strict = true;
  }
  return strict;
}

// ---------------------------------------------------------------------------

Box Box::from_bounds(const Vector& lower, const Vector& upper) {
  if (lower.size() != upper.size() || lower.size() == 0) throw ConfigurationError("box bounds differ in dimension");
  if ((upper.array() <= lower.array()).any()) throw ConfigurationError("box needs lower < upper in every coordinate");
  return {0.5 * (lower + upper), 0.5 * (upper - lower)};
}

bool Box::contains(const Vector& y, double tol) const {
  return ((y - center).cwiseAbs().array() <= radius.array() + tol).all();
}

double Box::volume() const { return (2.0 * radius).prod(); }

BoxTree::BoxTree(Box root) {
  if (root.center.size() == 0 || root.center.size() != root.radius.size()) {
    throw ConfigurationError("root box is malformed");
  }
  if ((root.radius.array() <= 0.0).any()) throw ConfigurationError("box radius must be positive");
  nodes_.push_back({std::move(root), 0, -1, true, 0});
  collection_.push_back(0);
}

std::vector<std::size_t> BoxTree::leaves() const { return collection_; }

std::vector<Box> BoxTree::leaf_boxes() const {
  std::vector<Box> out;
  out.reserve(collection_.size());
  for (auto k : collection_) out.push_back(nodes_[k].box);
  return out;
}

void BoxTree::subdivide() {
  ++iteration_;
  std::vector<std::size_t> next;
  next.reserve(2 * collection_.size());
  const int n = root().dimension();
  for (auto k : collection_) {
    const Box parent = nodes_[k].box;
    const int depth = nodes_[k].depth;
    const int axis = depth % n;
    Box lo = parent;
    lo.radius(axis) *= 0.5;
    Box hi = lo;
    lo.center(axis) -= lo.radius(axis);
    hi.center(axis) += hi.radius(axis);
    nodes_[k].first_child = static_cast<int>(nodes_.size());
    nodes_[k].active = false;
    next.push_back(nodes_.size());
    nodes_.push_back({std::move(lo), depth + 1, -1, true, iteration_});
    next.push_back(nodes_.size());
    nodes_.push_back({std::move(hi), depth + 1, -1, true, iteration_});
  }
  collection_ = std::move(next);
}

void BoxTree::remove(std::size_t k) {
  const auto it = std::find(collection_.begin(), collection_.end(), k);
  if (it == collection_.end()) throw ConfigurationError("node is not part of the collection");
  collection_.erase(it);
  nodes_[k].active = false;
  nodes_[k].survived_iteration = iteration_ - 1;
}

// ---------------------------------------------------------------------------

bool ParetoArchive::dominated(const Vector& f) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const ArchiveEntry& e) { return dominates(e.f, f); });
}

bool ParetoArchive::insert(const Vector& y, const Vector& f) {
  for (const auto& e : entries_) {
    if (e.f == f || dominates(e.f, f)) return false;
  }
  std::erase_if(entries_, [&](const ArchiveEntry& e) { return dominates(f, e.f); });
  entries_.push_back({y, f});
  return true;
}

// ---------------------------------------------------------------------------

namespace {

constexpr std::array<int, 16> primes{2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53};

double radical_inverse(std::uint64_t k, int base) {
  double inv = 1.0 / base;
  double scale = inv;
  double r = 0.0;
  while (k > 0) {
    r += static_cast<double>(k % static_cast<std::uint64_t>(base)) * scale;
    k /= static_cast<std::uint64_t>(base);
    scale *= inv;
  }
  return r;
}

}  // namespace

Matrix halton_offsets(int dimension, int count, std::uint64_t seed) {
  if (dimension < 1 || dimension > static_cast<int>(primes.size())) {
    throw ConfigurationError("Halton offsets support 1.." + std::to_string(primes.size()) + " dimensions");
  }
  Matrix out(std::max(count, 0), dimension);
  for (int d = 0; d < dimension; ++d) {
    Rng rng = make_rng(seed, streams::box_offsets, static_cast<std::uint64_t>(d));
    const double shift = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    for (int k = 0; k < count; ++k) {
      double h = radical_inverse(static_cast<std::uint64_t>(k) + 1, primes[static_cast<std::size_t>(d)]) + shift;
      h -= std::floor(h);
      out(k, d) = 2.0 * h - 1.0;
    }
  }
  return out;
}

namespace {

// Evaluates every point; nullopt marks a failure (exception or NaN).
std::vector<std::optional<Vector>> evaluate_all(const std::vector<Vector>& points, const Evaluator& evaluator,
                                                Exec exec) {
  std::vector<std::optional<Vector>> out(points.size());
  for_each_index(exec, points.size(), [&](std::size_t k) {
    try {
      Vector f = evaluator(points[k]);
      if (!f.hasNaN()) out[k] = std::move(f);
    } catch (const ConfigurationError&) {
      throw;
    } catch (const std::exception&) {
      // counted by the caller
    }
  });
  return out;
}

}  // namespace

FilterStats nondominance_filter(BoxTree& tree, const Evaluator& evaluator, ParetoArchive& archive,
                                const SamplingOptions& options) {
  if (options.samples_per_box < 1) throw ConfigurationError("samples_per_box must be >= 1");
  const auto leaves = tree.leaves();
  const auto per_box = static_cast<std::size_t>(options.samples_per_box);
  const Matrix offsets = halton_offsets(tree.root().dimension(), options.samples_per_box - 1, options.seed);

  std::vector<Vector> points;
  points.reserve(leaves.size() * per_box);
  for (auto k : leaves) {
    const Box& box = tree.node(k).box;
    points.push_back(box.center);
    for (Eigen::Index s = 0; s < offsets.rows(); ++s) {
      points.push_back(box.center + box.radius.cwiseProduct(offsets.row(s).transpose()));
    }
  }
  const auto values = evaluate_all(points, evaluator, options.exec);

  FilterStats stats;
  stats.evaluations = points.size();
  for (std::size_t p = 0; p < points.size(); ++p) {
    if (values[p]) {
      archive.insert(points[p], *values[p]);
    } else {
      ++stats.failures;
    }
  }

  std::vector<std::size_t> drop;
  for (std::size_t b = 0; b < leaves.size(); ++b) {
    bool any_ok = false;
    bool keep = false;
    for (std::size_t s = 0; s < per_box && !keep; ++s) {
      const auto& f = values[b * per_box + s];
      if (!f) continue;
      any_ok = true;
      keep = !archive.dominated(*f);
    }
    if (!any_ok) {
      warn("all objective evaluations failed in a box; keeping it");
      keep = true;
    }
    if (!keep) drop.push_back(leaves[b]);
  }
  for (auto k : drop) tree.remove(k);
  stats.removed = drop.size();
  stats.survivors = leaves.size() - drop.size();
  return stats;
}

SamplingResult sampling_algorithm(const Box& region, const Evaluator& evaluator, int iterations,
                                  const SamplingOptions& options) {
  if (iterations < 1) throw ConfigurationError("iterations must be >= 1");
  SamplingResult result{BoxTree(region), {}, {}, 0, 0};
  for (int s = 0; s < iterations; ++s) {
    result.tree.subdivide();
    const auto stats = nondominance_filter(result.tree, evaluator, result.archive, options);
    result.evaluations += stats.evaluations;
    result.failures += stats.failures;
    result.leaf_counts.push_back(stats.survivors);
    if (stats.survivors == 0) throw std::logic_error("non-dominance filter removed every box");
  }
  return result;
}

std::vector<FrontPoint> pareto_front(const BoxTree& tree, const Evaluator& evaluator, Exec exec) {
  const auto leaves = tree.leaves();
  if (leaves.empty()) throw ConfigurationError("tree has no leaves");
  std::vector<Vector> centers;
  centers.reserve(leaves.size());
  for (auto k : leaves) centers.push_back(tree.node(k).box.center);
  return pareto_front(centers, evaluator, exec);
}

std::vector<FrontPoint> pareto_front(const std::vector<Vector>& centers, const Evaluator& evaluator, Exec exec) {
  if (centers.empty()) throw ConfigurationError("no centers to evaluate");
  const auto values = evaluate_all(centers, evaluator, exec);

  std::vector<FrontPoint> ok;
  std::vector<FrontPoint> failed;
  for (std::size_t k = 0; k < centers.size(); ++k) {
    if (values[k]) {
      ok.push_back({centers[k], *values[k], true});
    } else {
      failed.push_back({centers[k], Vector(), false});
    }
  }
  std::vector<FrontPoint> front;
  for (const auto& p : ok) {
    const bool beaten = std::any_of(ok.begin(), ok.end(), [&](const FrontPoint& q) { return dominates(q.f, p.f); });
    if (!beaten) front.push_back(p);
  }
  std::stable_sort(front.begin(), front.end(), [](const FrontPoint& a, const FrontPoint& b) { return a.f(0) < b.f(0); });
  front.insert(front.end(), failed.begin(), failed.end());
  return front;
}

void write_covering_csv(const std::filesystem::path& path, const BoxTree& tree) {
  const int n = tree.root().dimension();
  std::vector<std::string> header;
  for (int i = 0; i < n; ++i) header.push_back("center_" + std::to_string(i));
  for (int i = 0; i < n; ++i) header.push_back("radius_" + std::to_string(i));
  header.push_back("survived_iteration");
  CsvWriter csv(path, header);
  std::vector<double> row(header.size());
  for (std::size_t k = 0; k < tree.node_count(); ++k) {
    const auto& node = tree.node(k);
    for (int i = 0; i < n; ++i) {
      row[static_cast<std::size_t>(i)] = node.box.center(i);
      row[static_cast<std::size_t>(n + i)] = node.box.radius(i);
    }
    row.back() = node.survived_iteration;
    csv.row(row);
  }
}

void write_front_csv(const std::filesystem::path& path, const std::vector<FrontPoint>& front) {
  std::size_t n = 0;
  std::size_t k = 0;
  for (const auto& p : front) {
    if (!p.ok) continue;
    n = static_cast<std::size_t>(p.center.size());
    k = static_cast<std::size_t>(p.f.size());
    break;
  }
  std::vector<std::string> header;
  for (std::size_t i = 0; i < n; ++i) header.push_back("y_" + std::to_string(i));
  for (std::size_t i = 0; i < k; ++i) header.push_back("f_" + std::to_string(i + 1));
  CsvWriter csv(path, header);
  for (const auto& p : front) {
    if (!p.ok) continue;
    std::vector<double> row(p.center.begin(), p.center.end());
    row.insert(row.end(), p.f.begin(), p.f.end());
    csv.row(row);
  }
}

nlohmann::json run_summary(const SamplingResult& result) {
  return {{"iterations", result.tree.iteration()},
          {"leaf_counts", result.leaf_counts},
          {"archive_size", result.archive.size()},
          {"evaluations", result.evaluations},
          {"failures", result.failures}};
}

}  // namespace koopmoo
