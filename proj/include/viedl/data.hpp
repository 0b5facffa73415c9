#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace viedl {

/// n x d feature matrix (row-major) with optional integer class labels.
struct Dataset {
  std::size_t rows = 0;
  std::size_t dim = 0;
  std::vector<double> features;
  std::optional<std::vector<int>> labels;
  std::string name;
  // Generator parameters (seed included), echoed into reports.
  std::map<std::string, std::string> metadata;

  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(features).subspan(i * dim, dim);
  }
  bool has_labels() const { return labels.has_value(); }
  /// 1 + max label, or 0 without labels.
  std::size_t num_classes() const;
  /// Throws std::invalid_argument when shapes or labels are inconsistent.
  void validate() const;
  /// Metadata rendered as "k=v,k=v".
  std::string describe() const;
};

/// k Gaussian classes with means evenly spaced on a circle of radius
/// `separation` in the first two coordinates, isotropic std `spread`.
Dataset gaussian_blobs(std::size_t k, std::size_t n_per_class, std::size_t dim,
                       double separation, double spread, std::uint64_t seed);

/// Class means used by gaussian_blobs.
std::vector<double> blob_means(std::size_t k, std::size_t dim, double separation);

/// Unlabelled Gaussian cluster centred `offset` away from the origin (the
/// blob centroid), in the direction at `angle` radians in the first two
/// coordinates.
Dataset ood_blob(std::size_t dim, std::size_t n, double offset, double spread,
                 std::uint64_t seed, double angle = 0.0);

/// Copy of `data` with N(0, sigma^2) added to every feature; labels kept.
Dataset add_gaussian_noise(const Dataset& data, double sigma, std::uint64_t seed);

/// Header `f0,...,f{d-1}[,label]`; values written in shortest round-trip form.
void save_csv(const Dataset& data, const std::filesystem::path& path);
/// Throws viedl::ConfigError naming the offending line on malformed input.
Dataset load_csv(const std::filesystem::path& path);

/// max_i ||x_i||_2.
double feature_radius(const Dataset& data);

/// max - min over every feature value; the scale noise levels are quoted in.
double feature_range(const Dataset& data);

/// Parses the `--synthetic` mini-language, e.g.
///   blobs:k=3,n=500,d=2,sep=6,spread=1,seed=7
///   ood:n=500,d=2,offset=20,spread=1,seed=11,angle=0
/// Throws viedl::ConfigError on unknown kinds or keys.
Dataset synthetic_from_spec(const std::string& spec);

}  // namespace viedl
