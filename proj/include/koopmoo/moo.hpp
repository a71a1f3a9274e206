#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "koopmoo/dictionary.hpp"
#include "koopmoo/parallel.hpp"

namespace koopmoo {

/// Maps a decision point to its objective vector. Throwing marks the point as failed.
using Evaluator = std::function<Vector(const Vector& y)>;

/// Pareto dominance for minimisation: fa <= fb componentwise and fa != fb.
/// A vector with a +inf entry (infeasible) is dominated by every finite vector.
/// Throws ConfigurationError on a length mismatch.
bool dominates(const Vector& fa, const Vector& fb);

struct Box {
  Vector center;
  Vector radius;

  static Box from_bounds(const Vector& lower, const Vector& upper);
  int dimension() const { return static_cast<int>(center.size()); }
  Vector lower() const { return center - radius; }
  Vector upper() const { return center + radius; }
  bool contains(const Vector& y, double tol = 0.0) const;
  double volume() const;
  double diameter() const { return 2.0 * radius.norm(); }
};

/// Binary subdivision tree. A node at depth k splits along coordinate k mod n into two
/// halves (theta = 0.5). All nodes are kept so the history can be exported.
class BoxTree {
 public:
  struct Node {
    Box box;
    int depth = 0;
    int first_child = -1;
    bool active = true;          // still part of the collection (leaves only)
    int survived_iteration = 0;  // last iteration after which the node was in the collection
  };

  BoxTree() = default;  // empty placeholder, assign before use
  explicit BoxTree(Box root);

  const Box& root() const { return nodes_.front().box; }
  std::size_t node_count() const { return nodes_.size(); }
  const Node& node(std::size_t k) const { return nodes_[k]; }
  int iteration() const { return iteration_; }

  /// Indices of the current collection, in tree order.
  std::vector<std::size_t> leaves() const;
  std::vector<Box> leaf_boxes() const;

  /// Splits every leaf of the collection and advances the iteration counter.
  void subdivide();
  /// Drops a leaf from the collection.
  void remove(std::size_t k);

 private:
  std::vector<Node> nodes_;
  std::vector<std::size_t> collection_;
  int iteration_ = 0;
};

struct ArchiveEntry {
  Vector y;
  Vector f;
};

/// Mutually non-dominated set of evaluated points.
class ParetoArchive {
 public:
  /// Inserts (y, f) unless it is dominated by, or ties with, a member; evicts members
  /// that f dominates. Returns whether the point was added.
  bool insert(const Vector& y, const Vector& f);
  bool dominated(const Vector& f) const;
  const std::vector<ArchiveEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

 private:
  std::vector<ArchiveEntry> entries_;
};

/// (count) x n matrix of offsets in [-1, 1]^n: a Halton sequence with a seeded
/// Cranley-Patterson rotation. Row 0 is not the center; callers add that separately.
Matrix halton_offsets(int dimension, int count, std::uint64_t seed);

struct FilterStats {
  std::size_t evaluations = 0;
  std::size_t failures = 0;
  std::size_t survivors = 0;
  std::size_t removed = 0;
};

struct SamplingOptions {
  int samples_per_box = 20;
  std::uint64_t seed = 0;
  Exec exec = Exec::parallel;
};

/// One filtering pass over the current collection: evaluate the center plus
/// samples_per_box - 1 offsets in every leaf, merge the successes into the archive,
/// then keep the leaves with at least one sample the archive does not dominate.
FilterStats nondominance_filter(BoxTree& tree, const Evaluator& evaluator, ParetoArchive& archive,
                                const SamplingOptions& options);

struct SamplingResult {
  BoxTree tree;
  ParetoArchive archive;
  std::vector<std::size_t> leaf_counts;  // after each iteration
  std::size_t evaluations = 0;
  std::size_t failures = 0;
};

/// Subdivision and selection alternated `iterations` times starting from the box R.
SamplingResult sampling_algorithm(const Box& region, const Evaluator& evaluator, int iterations,
                                  const SamplingOptions& options = {});

struct FrontPoint {
  Vector center;
  Vector f;
  bool ok = true;
};

/// Objectives at the leaf centers, dominated centers removed, sorted by the first
/// objective. Failed evaluations are kept at the end with ok = false.
std::vector<FrontPoint> pareto_front(const BoxTree& tree, const Evaluator& evaluator, Exec exec = Exec::parallel);
std::vector<FrontPoint> pareto_front(const std::vector<Vector>& centers, const Evaluator& evaluator,
                                     Exec exec = Exec::parallel);

void write_covering_csv(const std::filesystem::path& path, const BoxTree& tree);
void write_front_csv(const std::filesystem::path& path, const std::vector<FrontPoint>& front);
nlohmann::json run_summary(const SamplingResult& result);

}  // namespace koopmoo
