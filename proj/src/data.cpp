#include "viedl/data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <system_error>

#include "viedl/error.hpp"
#include "viedl/format.hpp"
#include "viedl/rng.hpp"

namespace viedl {
namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(s);
  while (std::getline(in, field, sep)) out.push_back(field);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

bool parse_double(const std::string& text, double& out) {
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (first != last && *first == '+') ++first;
  const auto res = std::from_chars(first, last, out);
  return res.ec == std::errc() && res.ptr == last;
}

}  // namespace

std::size_t Dataset::num_classes() const {
  if (!labels || labels->empty()) return 0;
  return static_cast<std::size_t>(*std::max_element(labels->begin(), labels->end())) + 1;
}

void Dataset::validate() const {
  if (features.size() != rows * dim) {
    throw std::invalid_argument("Dataset: feature matrix is not rows x dim");
  }
  if (labels) {
    if (labels->size() != rows) throw std::invalid_argument("Dataset: label count mismatch");
    for (int l : *labels) {
      if (l < 0) throw std::invalid_argument("Dataset: negative label");
    }
  }
}

std::string Dataset::describe() const {
  std::string out;
  for (const auto& [k, v] : metadata) {
    if (!out.empty()) out += ',';
    out += k + "=" + v;
  }
  return out;
}

std::vector<double> blob_means(std::size_t k, std::size_t dim, double separation) {
  std::vector<double> means(k * dim, 0.0);
  for (std::size_t c = 0; c < k; ++c) {
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(c) /
                         static_cast<double>(k);
    means[c * dim + 0] = separation * std::cos(angle);
    means[c * dim + 1] = separation * std::sin(angle);
  }
  return means;
}

Dataset gaussian_blobs(std::size_t k, std::size_t n_per_class, std::size_t dim,
                       double separation, double spread, std::uint64_t seed) {
  if (k < 2 || dim < 2) throw std::invalid_argument("gaussian_blobs: need k >= 2, d >= 2");
  if (!(spread >= 0.0)) throw std::invalid_argument("gaussian_blobs: spread must be >= 0");
  const std::vector<double> means = blob_means(k, dim, separation);
  SplitMix64 rng(seed);
  Dataset out;
  out.rows = k * n_per_class;
  out.dim = dim;
  out.features.resize(out.rows * dim);
  out.labels.emplace(out.rows);
  // Classes interleaved so that any prefix is roughly balanced.
  for (std::size_t i = 0; i < n_per_class; ++i) {
    for (std::size_t c = 0; c < k; ++c) {
      const std::size_t r = i * k + c;
      (*out.labels)[r] = static_cast<int>(c);
      for (std::size_t j = 0; j < dim; ++j) {
        out.features[r * dim + j] = means[c * dim + j] + spread * rng.normal();
      }
    }
  }
  out.name = "blobs";
  out.metadata = {{"kind", "blobs"},
                  {"k", std::to_string(k)},
                  {"n", std::to_string(n_per_class)},
                  {"d", std::to_string(dim)},
                  {"sep", format_double(separation)},
                  {"spread", format_double(spread)},
                  {"seed", std::to_string(seed)}};
  return out;
}

Dataset ood_blob(std::size_t dim, std::size_t n, double offset, double spread,
                 std::uint64_t seed, double angle) {
  if (!(offset > 0.0)) throw std::invalid_argument("ood_blob: offset must be > 0");
  if (dim < 2) throw std::invalid_argument("ood_blob: need d >= 2");
  if (!(spread >= 0.0)) throw std::invalid_argument("ood_blob: spread must be >= 0");
  std::vector<double> centre(dim, 0.0);
  centre[0] = offset * std::cos(angle);
  centre[1] = offset * std::sin(angle);
  SplitMix64 rng(seed);
  Dataset out;
  out.rows = n;
  out.dim = dim;
  out.features.resize(n * dim);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < dim; ++j) {
      out.features[r * dim + j] = centre[j] + spread * rng.normal();
    }
  }
  out.name = "ood";
  out.metadata = {{"kind", "ood"},
                  {"n", std::to_string(n)},
                  {"d", std::to_string(dim)},
                  {"offset", format_double(offset)},
                  {"spread", format_double(spread)},
                  {"angle", format_double(angle)},
                  {"seed", std::to_string(seed)}};
  return out;
}

Dataset add_gaussian_noise(const Dataset& data, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw std::invalid_argument("add_gaussian_noise: sigma must be >= 0");
  Dataset out = data;
  if (sigma > 0.0) {
    SplitMix64 rng(seed);
    for (double& v : out.features) v += sigma * rng.normal();
  }
  out.metadata["noise_sigma"] = format_double(sigma);
  out.metadata["noise_seed"] = std::to_string(seed);
  return out;
}

void save_csv(const Dataset& data, const std::filesystem::path& path) {
  data.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open '" + path.string() + "' for writing");
  for (std::size_t j = 0; j < data.dim; ++j) out << (j ? "," : "") << 'f' << j;
  if (data.labels) out << ",label";
  out << '\n';
  for (std::size_t r = 0; r < data.rows; ++r) {
    for (std::size_t j = 0; j < data.dim; ++j) {
      out << (j ? "," : "") << format_double(data.features[r * data.dim + j]);
    }
    if (data.labels) out << ',' << (*data.labels)[r];
    out << '\n';
  }
  if (!out) throw ConfigError("failed writing '" + path.string() + "'");
}

Dataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(path.string() + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> header = split(line, ',');
  Dataset out;
  bool labelled = false;
  for (std::size_t j = 0; j < header.size(); ++j) {
    const std::string h = trim(header[j]);
    if (h == "label" && j + 1 == header.size()) {
      labelled = true;
    } else if (h != "f" + std::to_string(j)) {
      throw ConfigError(path.string() + ":1: unexpected header column '" + h + "'");
    }
  }
  out.dim = header.size() - (labelled ? 1 : 0);
  if (out.dim == 0) throw ConfigError(path.string() + ":1: no feature columns");
  if (labelled) out.labels.emplace();
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const std::vector<std::string> fields = split(line, ',');
    if (fields.size() != header.size()) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                        std::to_string(header.size()) + " fields, got " +
                        std::to_string(fields.size()));
    }
    for (std::size_t j = 0; j < out.dim; ++j) {
      double v = 0.0;
      if (!parse_double(trim(fields[j]), v)) {
        throw ConfigError(path.string() + ":" + std::to_string(line_no) +
                          ": bad number '" + fields[j] + "'");
      }
      out.features.push_back(v);
    }
    if (labelled) {
      double v = 0.0;
      const std::string field = trim(fields.back());
      if (!parse_double(field, v) || v < 0 || v != std::floor(v)) {
        throw ConfigError(path.string() + ":" + std::to_string(line_no) +
                          ": bad label '" + field + "'");
      }
      out.labels->push_back(static_cast<int>(v));
    }
    ++out.rows;
  }
  out.name = path.stem().string();
  out.metadata = {{"kind", "csv"}, {"path", path.string()}};
  return out;
}

double feature_radius(const Dataset& data) {
  if (data.rows == 0) throw std::invalid_argument("feature_radius: empty dataset");
  double best = 0.0;
  for (std::size_t r = 0; r < data.rows; ++r) {
    double sq = 0.0;
    for (double v : data.row(r)) sq += v * v;
    best = std::max(best, std::sqrt(sq));
  }
  return best;
}

double feature_range(const Dataset& data) {
  if (data.features.empty()) throw std::invalid_argument("feature_range: empty dataset");
  const auto [lo, hi] = std::minmax_element(data.features.begin(), data.features.end());
  return *hi - *lo;
}

Dataset synthetic_from_spec(const std::string& spec) {
  const auto colon = spec.find(':');
  const std::string kind = trim(spec.substr(0, colon));
  std::map<std::string, double> params;
  if (colon != std::string::npos) {
    for (const std::string& item : split(spec.substr(colon + 1), ',')) {
      if (trim(item).empty()) continue;
      const auto eq = item.find('=');
      double v = 0.0;
      if (eq == std::string::npos || !parse_double(trim(item.substr(eq + 1)), v)) {
        throw ConfigError("synthetic spec: malformed item '" + item + "'");
      }
      params[trim(item.substr(0, eq))] = v;
    }
  }
  auto take = [&](const char* key, double fallback) {
    const auto it = params.find(key);
    if (it == params.end()) return fallback;
    const double v = it->second;
    params.erase(it);
    return v;
  };
  auto count = [&](const char* key, double fallback) {
    const double v = take(key, fallback);
    if (v < 0 || v != std::floor(v)) {
      throw ConfigError(std::string("synthetic spec: '") + key + "' must be a count");
    }
    return static_cast<std::size_t>(v);
  };
  Dataset out;
  if (kind == "blobs") {
    const std::size_t k = count("k", 3);
    const std::size_t n = count("n", 500);
    const std::size_t d = count("d", 2);
    const double sep = take("sep", 6.0);
    const double spread = take("spread", 1.0);
    const auto seed = static_cast<std::uint64_t>(count("seed", 7));
    if (!params.empty()) throw ConfigError("synthetic spec: unknown key '" + params.begin()->first + "'");
    if (k < 2 || d < 2) throw ConfigError("synthetic spec: blobs need k >= 2 and d >= 2");
    out = gaussian_blobs(k, n, d, sep, spread, seed);
  } else if (kind == "ood") {
    const std::size_t n = count("n", 500);
    const std::size_t d = count("d", 2);
    const double offset = take("offset", 20.0);
    const double spread = take("spread", 1.0);
    const auto seed = static_cast<std::uint64_t>(count("seed", 11));
    const double angle = take("angle", 0.0);
    if (!params.empty()) throw ConfigError("synthetic spec: unknown key '" + params.begin()->first + "'");
    if (!(offset > 0.0) || d < 2) throw ConfigError("synthetic spec: ood needs offset > 0 and d >= 2");
    out = ood_blob(d, n, offset, spread, seed, angle);
  } else {
    throw ConfigError("synthetic spec: unknown generator '" + kind + "'");
  }
  return out;
}

}  // namespace viedl
