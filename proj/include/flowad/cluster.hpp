#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "flowad/array.hpp"
#include "flowad/dataio.hpp"

namespace flowad
{

/// Rows of a panel used to compare features (one week by default).
struct PrototypeWindow
{
  std::size_t begin = 0;
  std::size_t length = 0;  // 0 means "to the end of the panel"
};

/// First row aligned to Monday 00:00 UTC with a full week after it; the whole
/// panel if no such week exists.
PrototypeWindow first_full_week(const SeriesPanel& panel);

/// Symmetric pairwise distances between sampled features.
struct DistanceMatrix
{
  std::vector<std::string> ids;
  Array values;  // M x M

  std::size_t size() const { return ids.size(); }
  /// Throws std::invalid_argument unless square, symmetric, finite, nonnegative
  /// with zero diagonal.
  void validate() const;
};

/// DTW with squared pointwise cost; returns the square root of the optimal
/// accumulated cost. `band` limits |i - j| (widened to cover the length gap).
double dtw_distance(std::span<const double> a, std::span<const double> b, std::optional<std::size_t> band = std::nullopt);

struct DistanceOptions
{
  std::size_t sample_size = 100;
  std::uint64_t seed = 0;
  std::optional<PrototypeWindow> window;  // defaults to first_full_week
  std::optional<double> band_fraction;    // Sakoe-Chiba width relative to length
  std::size_t threads = 0;                // 0 = hardware concurrency
};

/// Samples features uniformly without replacement (kept in panel order) and
/// computes their DTW matrix over the prototype window.
DistanceMatrix build_distance_matrix(const SeriesPanel& panel, const DistanceOptions& options);

struct OpticsResult
{
  std::vector<std::size_t> ordering;
  std::vector<double> reachability;  // per point; infinity when unreached
  std::vector<double> core_distance;
  std::vector<std::size_t> predecessor;  // kNone when unreached

  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  /// Reachability in visiting order.
  std::vector<double> reachability_plot() const;
};

/// OPTICS on a precomputed distance matrix with no epsilon cap. The core
/// distance counts the point itself; ties are broken by lowest index.
OpticsResult optics(const Array& distances, std::size_t min_pts);

/// Interval of positions in the OPTICS ordering, inclusive.
struct XiCluster
{
  std::size_t start, end;

  std::size_t size() const { return end - start + 1; }
};

/// Xi steep-area clusters with predecessor correction, smaller clusters
/// listed before the clusters enclosing them.
std::vector<XiCluster> xi_clusters(const OpticsResult& result, double xi, std::size_t min_pts,
                                   std::size_t min_cluster_size);

/// Flat labels from the xi cluster tree: a cluster is kept unless its
/// descendants together have more excess of mass, measured as size times the
/// span of 1/reachability over which the cluster stays separated. Returns a
/// label per point, -1 for noise.
std::vector<int> extract_xi(const OpticsResult& result, double xi, std::size_t min_pts, std::size_t min_cluster_size);

struct ClusterAssignment
{
  std::vector<std::string> feature_ids;
  std::vector<int> labels;           // parallel to feature_ids
  std::vector<std::string> medoids;  // indexed by label
  std::vector<std::string> sample_ids;
  OpticsResult optics;               // over sample_ids
  std::size_t min_pts = 5;
  double xi = 0.05;
  std::uint64_t seed = 0;

  std::size_t cluster_count() const { return medoids.size(); }
  int label_of(const std::string& feature_id) const;
  std::vector<std::string> members(int label) const;
  /// Throws std::invalid_argument unless every feature has a valid label and
  /// every medoid belongs to its cluster.
  void validate() const;
};

/// Index of the member with the smallest summed distance to all members.
std::size_t medoid_of(const Array& distances, std::span<const std::size_t> members);

/// OPTICS plus xi extraction over the matrix, with noise moved to the nearest
/// medoid. Falls back to a single cluster when M < min_pts or nothing is found.
ClusterAssignment cluster_features(const DistanceMatrix& matrix, std::size_t min_pts = 5, double xi = 0.05);

/// Adds every panel feature missing from `assignment` to the cluster whose
/// medoid is nearest in DTW over the window.
ClusterAssignment assign_remaining(const SeriesPanel& panel, ClusterAssignment assignment,
                                   std::optional<PrototypeWindow> window = std::nullopt,
                                   std::optional<double> band_fraction = std::nullopt);

/// `# key: value` metadata lines followed by `feature_id,cluster_label` rows.
void write_assignment(std::ostream& out, const ClusterAssignment& assignment);
void write_assignment(const std::string& path, const ClusterAssignment& assignment);
ClusterAssignment read_assignment(std::istream& in);
ClusterAssignment read_assignment(const std::string& path);

}  // namespace flowad
